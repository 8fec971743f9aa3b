#pragma once

#include <stdexcept>
#include <string>

namespace fsg {

// Domain failure. The message is the user-facing diagnostic.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fsg
