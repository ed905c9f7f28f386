#pragma once

#include <stdexcept>
#include <string>

namespace kinplan {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define KINPLAN_DEFINE_ERROR(Name)          \
  class Name : public Error {               \
   public:                                  \
    using Error::Error;                     \
  }

KINPLAN_DEFINE_ERROR(GenerationFailed);
KINPLAN_DEFINE_ERROR(PoseInCollision);
KINPLAN_DEFINE_ERROR(DegenerateWaypoints);
KINPLAN_DEFINE_ERROR(IllConditioned);
KINPLAN_DEFINE_ERROR(SingularFeedback);
KINPLAN_DEFINE_ERROR(CacheMismatch);
KINPLAN_DEFINE_ERROR(FormatError);
KINPLAN_DEFINE_ERROR(ConfigError);
KINPLAN_DEFINE_ERROR(AllSamplesFailed);

#undef KINPLAN_DEFINE_ERROR

}  // namespace kinplan
