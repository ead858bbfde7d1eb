#include "anlcl/sampler.hpp"

namespace anlcl {

const char* to_string(SampleMode m) {
  switch (m) {
    case SampleMode::nonlocal: return "nonlocal";
    case SampleMode::reverse_nonlocal: return "reverse_nonlocal";
    case SampleMode::random: return "random";
    case SampleMode::neighbour: return "neighbour";
  }
  return "nonlocal";
}

SampleMode sample_mode_from_string(const std::string& s) {
  if (s == "nonlocal") return SampleMode::nonlocal;
  if (s == "reverse_nonlocal") return SampleMode::reverse_nonlocal;
  if (s == "random") return SampleMode::random;
  if (s == "neighbour") return SampleMode::neighbour;
  throw Error(ErrorKind::config, "unknown sampling mode: " + s);
}

}  // namespace anlcl
