#pragma once

#include <stdexcept>
#include <string>

namespace tmopfit
{

enum class ErrorKind
{
   InvalidArgument,
   OutOfDomain,
   SingularJacobian,
   NonpositiveDeterminant,
   InvalidMesh,
   EmptyMarkedSet,
   ParseError,
   VersionMismatch,
   TransferFailure,
   LineSearchFailure,
   Io
};

const char *to_string(ErrorKind kind);

/// Exception carrying a machine-checkable kind alongside the message.
class Error : public std::runtime_error
{
public:
   Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

   ErrorKind kind() const { return kind_; }

private:
   ErrorKind kind_;
};

inline const char *to_string(ErrorKind kind)
{
   switch (kind)
   {
      case ErrorKind::InvalidArgument: return "invalid-argument";
      case ErrorKind::OutOfDomain: return "out-of-domain";
      case ErrorKind::SingularJacobian: return "singular-jacobian";
      case ErrorKind::NonpositiveDeterminant: return "nonpositive-determinant";
      case ErrorKind::InvalidMesh: return "invalid-mesh";
      case ErrorKind::EmptyMarkedSet: return "empty-marked-set";
      case ErrorKind::ParseError: return "parse-error";
      case ErrorKind::VersionMismatch: return "version-mismatch";
      case ErrorKind::TransferFailure: return "transfer-failure";
      case ErrorKind::LineSearchFailure: return "line-search-failure";
      case ErrorKind::Io: return "io-error";
   }
   return "unknown";
}

} // namespace tmopfit
