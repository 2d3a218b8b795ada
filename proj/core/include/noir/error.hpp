#pragma once

#include <stdexcept>
#include <string>

namespace noir {

// All precondition and contract violations in the library surface as
// noir::Error. The message names the violated condition.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(message);
}

}  // namespace noir
