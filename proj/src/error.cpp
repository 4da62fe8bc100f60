#include "pertasym/error.hpp"

namespace pertasym {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::Data: return "data error";
    case ErrorKind::Numeric: return "numeric error";
    case ErrorKind::Physicality: return "physicality error";
    case ErrorKind::Singularity: return "singularity reached";
    case ErrorKind::Interpolation: return "interpolation error";
    case ErrorKind::Stiffness: return "stiffness error";
    case ErrorKind::Precondition: return "precondition error";
    case ErrorKind::IllConditioned: return "ill-conditioned fit";
    case ErrorKind::Unsupported: return "unsupported regime";
    case ErrorKind::Inconclusive: return "inconclusive";
    case ErrorKind::Config: return "config error";
    case ErrorKind::Io: return "I/O error";
  }
  return "error";
}

}  // namespace pertasym
