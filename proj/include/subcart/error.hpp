#pragma once

#include <stdexcept>
#include <string>

namespace subcart {

enum class ErrorKind {
  Parse,               // malformed expression or spec document
  Io,                  // unreadable / unwritable file
  Guard,               // evaluation outside a quotient/sqrt domain guard
  Invalid,             // argument or presentation fails a structural check
  CoverFit,            // no chart domain can hold a W-ball at some sample
  NormalizerVanishes,  // partition normalizer too small at a sample
  ExceededFamilies,    // refinement needs more than n+1 disjoint families
  MaxRetriesExceeded,  // randomized stage exhausted its draws
  RankDeficient,       // generators fail to span at a sample
  SingularGram         // psi psi^* not invertible
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Guard: return "Guard";
    case ErrorKind::Invalid: return "Invalid";
    case ErrorKind::CoverFit: return "CoverFit";
    case ErrorKind::NormalizerVanishes: return "NormalizerVanishes";
    case ErrorKind::ExceededFamilies: return "ExceededFamilies";
    case ErrorKind::MaxRetriesExceeded: return "MaxRetriesExceeded";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::SingularGram: return "SingularGram";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace subcart
