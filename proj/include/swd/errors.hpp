#ifndef SWD_ERRORS_HPP
#define SWD_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace swd {

// Error categories map 1:1 onto CLI exit codes and C API status codes.
class error : public std::runtime_error {
public:
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad configuration: unknown keys, invalid layouts, inconsistent specs.
class config_error : public error {
public:
  explicit config_error(const std::string& msg) : error(msg) {}
};

// Bad input data: unparseable rows, structural gaps, missing columns.
class data_error : public error {
public:
  explicit data_error(const std::string& msg) : error(msg) {}
};

// Numerical failure: singular systems, non-PD covariance parameters.
class numeric_error : public error {
public:
  explicit numeric_error(const std::string& msg) : error(msg) {}
};

// Filesystem failure: unreadable or unwritable paths.
class io_error : public error {
public:
  explicit io_error(const std::string& msg) : error(msg) {}
};

} // namespace swd

#endif
