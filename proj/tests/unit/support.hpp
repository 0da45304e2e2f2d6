#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

#include "provbind/ingest.hpp"

namespace testing {

/// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("provbind-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline provbind::RawEvent event(std::string subject, std::string object, std::string op, std::int64_t ts,
                                provbind::EntityKind kind = provbind::EntityKind::file,
                                provbind::AttrMap object_attrs = {}) {
  provbind::RawEvent e;
  e.event_id = subject + "/" + object + "/" + op + "/" + std::to_string(ts);
  e.subject_uuid = std::move(subject);
  e.object_uuid = std::move(object);
  e.operation = std::move(op);
  e.timestamp = ts;
  e.subject_attrs = {{"name", "proc"}};
  e.object_kind = kind;
  e.object_attrs = object_attrs.empty() ? provbind::AttrMap{{"path", "/tmp/x"}} : std::move(object_attrs);
  return e;
}

}  // namespace testing
