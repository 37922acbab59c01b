#include "meshshift/selection/oracle.hpp"

#include <algorithm>
#include <tuple>

namespace meshshift::selection {

std::string to_string(AccessContext c) {
  switch (c) {
    case AccessContext::oracle_tb: return "oracle_tb";
    case AccessContext::final_report: return "final_report";
    case AccessContext::training: return "training";
    case AccessContext::selection: return "selection";
    case AccessContext::verification: return "verification";
  }
  return "?";
}

bool oracle_permitted(AccessContext c) { return c == AccessContext::oracle_tb || c == AccessContext::final_report; }

void OracleAudit::record(AccessContext context, const std::string& subject, bool allowed) {
  std::lock_guard lock(mu_);
  entries_.push_back({entries_.size(), context, subject, allowed});
}

std::vector<OracleAudit::Entry> OracleAudit::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

std::size_t OracleAudit::total() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

std::size_t OracleAudit::non_oracle_reads() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& e : entries_) n += oracle_permitted(e.context) ? 0 : 1;
  return n;
}

nlohmann::json OracleAudit::to_json() const {
  std::lock_guard lock(mu_);
  // Entries are listed in a canonical order so that the log does not depend on thread interleaving.
  auto sorted = entries_;
  std::sort(sorted.begin(), sorted.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.context, a.subject, a.allowed) < std::tie(b.context, b.subject, b.allowed);
  });
  auto list = nlohmann::json::array();
  std::size_t denied = 0, oracle = 0, report = 0;
  for (const auto& e : sorted) {
    list.push_back({{"context", to_string(e.context)}, {"subject", e.subject}, {"allowed", e.allowed}});
    if (!oracle_permitted(e.context)) ++denied;
    if (e.context == AccessContext::oracle_tb) ++oracle;
    if (e.context == AccessContext::final_report) ++report;
  }
  return {{"total_reads", sorted.size()},
          {"oracle_tb_reads", oracle},
          {"final_report_reads", report},
          {"non_oracle_reads", denied},
          {"entries", list}};
}

}  // namespace meshshift::selection
