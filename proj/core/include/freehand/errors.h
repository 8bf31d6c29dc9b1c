// Copyright 2026 The Freehand Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FREEHAND_ERRORS_H_
#define FREEHAND_ERRORS_H_

#include <stdexcept>
#include <string>

namespace freehand {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define FREEHAND_DEFINE_ERROR(Name)                                      \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  }

FREEHAND_DEFINE_ERROR(EnumerationTooLarge);
FREEHAND_DEFINE_ERROR(RewardKindMismatch);
FREEHAND_DEFINE_ERROR(DegenerateLink);
FREEHAND_DEFINE_ERROR(InvalidEpsilon);
FREEHAND_DEFINE_ERROR(InvalidDelta);
FREEHAND_DEFINE_ERROR(DidNotConverge);
FREEHAND_DEFINE_ERROR(InvalidParams);
FREEHAND_DEFINE_ERROR(DegenerateProfile);
FREEHAND_DEFINE_ERROR(InsufficientLevels);
// Malformed inputs: bad shapes, unnormalized distributions, parse failures.
FREEHAND_DEFINE_ERROR(InvalidInput);

#undef FREEHAND_DEFINE_ERROR

}  // namespace freehand

#endif  // FREEHAND_ERRORS_H_
