#pragma once

#include <condition_variable>
#include <deque>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

namespace daca {

inline constexpr int kLogSchemaVersion = 1;

// Writes `record` plus a newline with a single write(2) on an O_APPEND
// descriptor. Adds "v" when missing. Throws StorageError.
void append_result(const nlohmann::json& record, const std::string& path);

struct LoadedLog {
  std::vector<nlohmann::json> records;
  std::vector<std::string> warnings;
};

// Unparseable lines (typically a half-written tail after a crash) are
// skipped with a warning. A missing file is an empty log.
LoadedLog load_log(const std::string& path);

// Single writer thread fed by a queue; close() (or the destructor) drains it.
class LogWriter {
 public:
  explicit LogWriter(std::string path);
  ~LogWriter();
  LogWriter(const LogWriter&) = delete;
  LogWriter& operator=(const LogWriter&) = delete;

  void push(nlohmann::json record);
  // Blocks until every pushed record is on disk; rethrows a write failure.
  void flush();
  void close();
  const std::string& path() const { return path_; }

 private:
  void loop(std::stop_token st);

  std::string path_;
  std::mutex mu_;
  std::condition_variable_any cv_;
  std::condition_variable_any drained_;
  std::deque<nlohmann::json> queue_;
  std::size_t busy_ = 0;
  std::string failure_;
  std::jthread worker_;
};

}  // namespace daca
