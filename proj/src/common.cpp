#include "eos/common.hpp"

namespace eos {

std::string to_string(Algorithm alg) {
  switch (alg) {
    case Algorithm::gd: return "gd";
    case Algorithm::polyak: return "polyak";
    case Algorithm::nesterov: return "nesterov";
    case Algorithm::sgd: return "sgd";
  }
  throw std::logic_error("unknown algorithm");
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "gd") return Algorithm::gd;
  if (name == "polyak") return Algorithm::polyak;
  if (name == "nesterov") return Algorithm::nesterov;
  if (name == "sgd") return Algorithm::sgd;
  throw std::invalid_argument("unknown algorithm: " + name);
}

}  // namespace eos
