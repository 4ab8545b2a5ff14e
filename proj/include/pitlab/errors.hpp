#pragma once

#include <stdexcept>
#include <string>

namespace pitlab {

#define PITLAB_DEFINE_ERROR(Name)                                   \
  struct Name : std::runtime_error {                                \
    explicit Name(const std::string& what) : std::runtime_error(what) {} \
  }

PITLAB_DEFINE_ERROR(LengthMismatch);
PITLAB_DEFINE_ERROR(ZeroReference);
PITLAB_DEFINE_ERROR(InvalidPermutation);
PITLAB_DEFINE_ERROR(EmptyWaveform);
PITLAB_DEFINE_ERROR(NoActiveFrames);
PITLAB_DEFINE_ERROR(InvalidConfig);
PITLAB_DEFINE_ERROR(TooManySources);
PITLAB_DEFINE_ERROR(CoverageMismatch);
PITLAB_DEFINE_ERROR(SilentUtterance);
PITLAB_DEFINE_ERROR(EmptyInput);
PITLAB_DEFINE_ERROR(ShapeMismatch);
PITLAB_DEFINE_ERROR(MissingLabels);
PITLAB_DEFINE_ERROR(StaleCache);
PITLAB_DEFINE_ERROR(IoError);

#undef PITLAB_DEFINE_ERROR

}  // namespace pitlab
