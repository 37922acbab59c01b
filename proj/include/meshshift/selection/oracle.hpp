#pragma once

#include <cstdint>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "meshshift/common/errors.hpp"

namespace meshshift::selection {

/// Who is asking for sealed target-domain ground truth.
enum class AccessContext { oracle_tb, final_report, training, selection, verification };

std::string to_string(AccessContext c);
bool oracle_permitted(AccessContext c);

/// Thread-safe append-only record of every attempt to open sealed target data.
class OracleAudit {
 public:
  struct Entry {
    std::uint64_t seq;
    AccessContext context;
    std::string subject;
    bool allowed;
  };

  void record(AccessContext context, const std::string& subject, bool allowed);
  std::vector<Entry> entries() const;
  std::size_t total() const;
  /// Attempts from contexts other than the oracle and final reporting.
  std::size_t non_oracle_reads() const;
  nlohmann::json to_json() const;

 private:
  mutable std::mutex mu_;
  std::vector<Entry> entries_;
};

/// A value that can only be opened through an audited, permitted context.
template <class T>
class Sealed {
 public:
  Sealed() = default;
  Sealed(T value, std::string subject) : value_(std::move(value)), subject_(std::move(subject)), present_(true) {}

  bool present() const noexcept { return present_; }
  const std::string& subject() const noexcept { return subject_; }

  const T& open(AccessContext context, OracleAudit& audit) const {
    const bool allowed = oracle_permitted(context);
    audit.record(context, subject_, allowed);
    if (!allowed) {
      throw PolicyError("sealed target data '" + subject_ + "' requested from context " + to_string(context));
    }
    if (!present_) throw SelectionError("sealed target data '" + subject_ + "' is not available");
    return value_;
  }

 private:
  T value_{};
  std::string subject_;
  bool present_ = false;
};

}  // namespace meshshift::selection
