#include "irtp/errors.hpp"

#include <sstream>

namespace irtp {

namespace {
std::string with_eigenvalue(const std::string& what, double ev) {
    std::ostringstream os;
    os << what << " (smallest eigenvalue " << ev << ")";
    return os.str();
}
}  // namespace

InversionError::InversionError(const std::string& what, double smallest_eigenvalue)
    : NumericalError(with_eigenvalue(what, smallest_eigenvalue)),
      smallest_eigenvalue_(smallest_eigenvalue) {}

}  // namespace irtp
