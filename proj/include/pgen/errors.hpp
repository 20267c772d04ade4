#pragma once

#include <stdexcept>
#include <string>

namespace pgen {

// Error taxonomy mirrored by the CLI exit codes:
// precondition_error -> 2, resource_error -> 3, io_error -> 4.
class error : public std::runtime_error {
public:
  explicit error(const std::string& what) : std::runtime_error(what) {}
};

class precondition_error : public error {
public:
  explicit precondition_error(const std::string& what) : error(what) {}
};

class resource_error : public error {
public:
  explicit resource_error(const std::string& what) : error(what) {}
};

class io_error : public error {
public:
  explicit io_error(const std::string& what) : error(what) {}
};

class internal_error : public error {
public:
  explicit internal_error(const std::string& what) : error(what) {}
};

}  // namespace pgen
