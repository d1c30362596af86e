#pragma once

#include <stdexcept>
#include <string>

namespace stratalloc {

// Bad user input: files, schemas, configs, out-of-range requests.
// The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace stratalloc
