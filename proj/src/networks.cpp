#include "anlcl/networks.hpp"

namespace anlcl {

const char* to_string(EncoderChoice c) {
  switch (c) {
    case EncoderChoice::discriminator: return "discriminator";
    case EncoderChoice::image_generator: return "image_generator";
    case EncoderChoice::image_rain_generator: return "image_rain_generator";
  }
  return "discriminator";
}

EncoderChoice encoder_choice_from_string(const std::string& s) {
  if (s == "discriminator") return EncoderChoice::discriminator;
  if (s == "image_generator") return EncoderChoice::image_generator;
  if (s == "image_rain_generator") return EncoderChoice::image_rain_generator;
  throw Error(ErrorKind::config, "unknown encoder choice: " + s);
}

}  // namespace anlcl
