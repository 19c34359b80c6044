// Copyright 2026 The fvlrp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <stdexcept>
#include <string>

namespace fvlrp {

// Root of every error the library throws. Each subclass names one failure
// category so callers (and the CLI exit-code mapping) can dispatch on type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define FVLRP_DEFINE_ERROR(Name)              \
  class Name : public Error {                 \
   public:                                    \
    explicit Name(const std::string& what)    \
        : Error(std::string(#Name ": ") + what) {} \
  }

FVLRP_DEFINE_ERROR(ParseError);
FVLRP_DEFINE_ERROR(ValidationError);
FVLRP_DEFINE_ERROR(IoError);
FVLRP_DEFINE_ERROR(VersionError);
FVLRP_DEFINE_ERROR(SpecError);
FVLRP_DEFINE_ERROR(ExtractError);
FVLRP_DEFINE_ERROR(DimError);
FVLRP_DEFINE_ERROR(FitError);
FVLRP_DEFINE_ERROR(EmptyInputError);
FVLRP_DEFINE_ERROR(DegenerateInputError);
FVLRP_DEFINE_ERROR(TrainError);
FVLRP_DEFINE_ERROR(KeyError);
FVLRP_DEFINE_ERROR(ZeroDenominatorError);
FVLRP_DEFINE_ERROR(RangeError);
FVLRP_DEFINE_ERROR(UndefinedError);
FVLRP_DEFINE_ERROR(DependencyError);
FVLRP_DEFINE_ERROR(UsageError);

#undef FVLRP_DEFINE_ERROR

}  // namespace fvlrp
