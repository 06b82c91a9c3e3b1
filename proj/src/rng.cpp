#include "mftg/rng.hpp"

#include <cmath>

namespace mftg {

double Stream::next_exponential() {
  // -log(1-u) through log1p for accuracy near u = 0.
  return -std::log1p(-next_uniform());
}

}  // namespace mftg
