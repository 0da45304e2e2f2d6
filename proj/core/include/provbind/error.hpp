#pragma once

#include <stdexcept>
#include <string>

namespace provbind {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters, inconsistent artifacts, or unusable input data.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Input parsed but does not look like the expected format at all.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A required artifact file does not exist.
class MissingArtifactError : public Error {
 public:
  MissingArtifactError(std::string artifact, std::string path)
      : Error(artifact + " artifact not found: " + path),
        artifact_(std::move(artifact)),
        path_(std::move(path)) {}

  const std::string& artifact() const noexcept { return artifact_; }
  const std::string& path() const noexcept { return path_; }

 private:
  std::string artifact_;
  std::string path_;
};

/// Training diverged (non-finite loss or weights).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace provbind
