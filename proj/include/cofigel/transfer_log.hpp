#pragma once

#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cofigel/rating_matrix.hpp"
#include "cofigel/types.hpp"

namespace cofigel {

struct TransferRecord {
  Seconds time = 0.0;
  NodeId from;
  NodeId to;
  ItemId item;
  Bytes bytes = 0;

  friend bool operator==(const TransferRecord&, const TransferRecord&) = default;
};

// One (item, user) delivery with the label the receiving device predicted
// just before the user watched it.
struct DeliveryRecord {
  Seconds time = 0.0;
  ItemId item;
  UserId user;
  Rating predicted_label = Rating::negative;

  friend bool operator==(const DeliveryRecord&, const DeliveryRecord&) = default;
};

// Capacity accounting for one direction of one contact.
struct ContactUsage {
  std::size_t contact = 0;
  NodeId from;
  NodeId to;
  Bytes capacity = 0;
  Bytes metadata = 0;
  Bytes transferred = 0;

  friend bool operator==(const ContactUsage&, const ContactUsage&) = default;
};

// Append-only.
struct TransferLog {
  std::vector<TransferRecord> transfers;
  std::vector<DeliveryRecord> deliveries;
  std::vector<ContactUsage> contacts;

  friend bool operator==(const TransferLog&, const TransferLog&) = default;
};

inline void write_transfer_log(std::ostream& out, const TransferLog& log) {
  out.precision(17);
  out << "record,time,from,to,item,user,bytes,label\n";
  for (const auto& t : log.transfers) {
    out << "transfer," << t.time << ',' << t.from << ',' << t.to << ',' << t.item << ",," << t.bytes << ",\n";
  }
  for (const auto& d : log.deliveries) {
    out << "delivery," << d.time << ",,," << d.item << ',' << d.user << ",,"
        << (d.predicted_label == Rating::positive ? 1 : 0) << '\n';
  }
}

inline std::string transfer_log_csv(const TransferLog& log) {
  std::ostringstream s;
  write_transfer_log(s, log);
  return s.str();
}

}  // namespace cofigel
