#include "daca/result_log.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>

#include "daca/error.hpp"
#include "daca/text.hpp"

namespace daca {

void append_result(const nlohmann::json& record, const std::string& path) {
  nlohmann::json j = record;
  if (!j.contains("v")) j["v"] = kLogSchemaVersion;
  const std::string line = j.dump() + "\n";
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw StorageError("cannot open log " + path + ": " + std::strerror(errno));
  const ssize_t n = ::write(fd, line.data(), line.size());
  const int err = errno;
  ::close(fd);
  if (n < 0) throw StorageError("write to " + path + " failed: " + std::strerror(err));
  if (static_cast<std::size_t>(n) != line.size()) throw StorageError("short write to " + path);
}

LoadedLog load_log(const std::string& path) {
  LoadedLog out;
  std::ifstream in(path, std::ios::binary);
  if (!in) return out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      if (!j.is_object() || !j.contains("type")) throw std::runtime_error("not a record");
      if (j.value("v", 0) != kLogSchemaVersion)
        throw std::runtime_error("unsupported schema version " + j.value("v", nlohmann::json()).dump());
      out.records.push_back(std::move(j));
    } catch (const std::exception& e) {
      out.warnings.push_back(path + ":" + std::to_string(line_no) + ": skipped corrupt record (" + e.what() + ")");
    }
  }
  return out;
}

LogWriter::LogWriter(std::string path)
    : path_(std::move(path)), worker_([this](std::stop_token st) { loop(st); }) {}

LogWriter::~LogWriter() {
  try {
    close();
  } catch (...) {
  }
}

void LogWriter::push(nlohmann::json record) {
  {
    std::lock_guard lk(mu_);
    if (!failure_.empty()) throw StorageError(failure_);
    queue_.push_back(std::move(record));
  }
  cv_.notify_one();
}

void LogWriter::loop(std::stop_token st) {
  std::unique_lock lk(mu_);
  while (true) {
    cv_.wait(lk, st, [&] { return !queue_.empty(); });
    if (queue_.empty()) {
      if (st.stop_requested()) return;
      continue;
    }
    nlohmann::json rec = std::move(queue_.front());
    queue_.pop_front();
    ++busy_;
    lk.unlock();
    try {
      append_result(rec, path_);
    } catch (const std::exception& e) {
      lk.lock();
      if (failure_.empty()) failure_ = e.what();
      lk.unlock();
    }
    lk.lock();
    --busy_;
    if (queue_.empty() && busy_ == 0) drained_.notify_all();
  }
}

void LogWriter::flush() {
  std::unique_lock lk(mu_);
  drained_.wait(lk, [&] { return queue_.empty() && busy_ == 0; });
  if (!failure_.empty()) throw StorageError(failure_);
}

void LogWriter::close() {
  if (!worker_.joinable()) return;
  flush();
  worker_.request_stop();
  cv_.notify_all();
  worker_.join();
}

}  // namespace daca
