// Copyright 2026 The faasfl Authors
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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace faasfl {

// Machine-readable error category. The CLI prints it as the first token of
// its single-line error message.
enum class ErrorCode {
  kInvalidArgument,
  kShapeMismatch,
  kNotFound,
  kAuthentication,
  kAuthorization,
  kCorruption,
  kStaleRound,
  kDocumentTooLarge,
  kNonFinite,
  kInvalidRequest,
  kFailedPrecondition,
  kIo,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define FAASFL_DEFINE_ERROR(Name, Code)                                   \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& message) : Error(Code, message) {}   \
  };

FAASFL_DEFINE_ERROR(InvalidArgument, ErrorCode::kInvalidArgument)
FAASFL_DEFINE_ERROR(ShapeMismatch, ErrorCode::kShapeMismatch)
FAASFL_DEFINE_ERROR(NotFound, ErrorCode::kNotFound)
FAASFL_DEFINE_ERROR(AuthenticationError, ErrorCode::kAuthentication)
FAASFL_DEFINE_ERROR(AuthorizationError, ErrorCode::kAuthorization)
FAASFL_DEFINE_ERROR(CorruptionError, ErrorCode::kCorruption)
FAASFL_DEFINE_ERROR(StaleRound, ErrorCode::kStaleRound)
FAASFL_DEFINE_ERROR(DocumentTooLarge, ErrorCode::kDocumentTooLarge)
FAASFL_DEFINE_ERROR(NonFiniteError, ErrorCode::kNonFinite)
FAASFL_DEFINE_ERROR(InvalidRequest, ErrorCode::kInvalidRequest)
FAASFL_DEFINE_ERROR(FailedPrecondition, ErrorCode::kFailedPrecondition)
FAASFL_DEFINE_ERROR(IoError, ErrorCode::kIo)

#undef FAASFL_DEFINE_ERROR

}  // namespace faasfl
