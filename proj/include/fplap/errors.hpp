#pragma once

#include <stdexcept>
#include <string>

namespace fpl {

class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Input violates a parameter constraint (sp < N, q < p_s*, n >= 2, ...).
class ValidationError : public Error
{
public:
  using Error::Error;
};

/// An iterative solver exhausted its budget without meeting its tolerance.
class ConvergenceError : public Error
{
public:
  using Error::Error;
};

/// A numerical test could not produce a yes/no verdict.
class InconclusiveError : public Error
{
public:
  using Error::Error;
};

enum class Verdict
{
  yes,
  no,
  inconclusive
};

inline const char *to_string(Verdict v)
{
  switch (v)
    {
      case Verdict::yes:
        return "yes";
      case Verdict::no:
        return "no";
      default:
        return "inconclusive";
    }
}

} // namespace fpl
