/*
 * Copyright 2026 The HFLSim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "hfl/errors.hpp"

namespace hfl {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::CycleDetected:
      return "CycleDetected";
    case Errc::MultipleRoots:
      return "MultipleRoots";
    case Errc::NoRoot:
      return "NoRoot";
    case Errc::RootHasParent:
      return "RootHasParent";
    case Errc::OrphanNode:
      return "OrphanNode";
    case Errc::DuplicateNode:
      return "DuplicateNode";
    case Errc::UserWithChildren:
      return "UserWithChildren";
    case Errc::EmptyGroupServer:
      return "EmptyGroupServer";
    case Errc::DanglingParent:
      return "DanglingParent";
    case Errc::NodeNotFound:
      return "NodeNotFound";
    case Errc::CannotRemoveRoot:
      return "CannotRemoveRoot";
    case Errc::GroupCountMismatch:
      return "GroupCountMismatch";
    case Errc::InvalidSize:
      return "InvalidSize";
    case Errc::MoreUsersThanSamples:
      return "MoreUsersThanSamples";
    case Errc::DegenerateSplit:
      return "DegenerateSplit";
    case Errc::DimensionMismatch:
      return "DimensionMismatch";
    case Errc::EmptyShard:
      return "EmptyShard";
    case Errc::EmptyInput:
      return "EmptyInput";
    case Errc::LengthMismatch:
      return "LengthMismatch";
    case Errc::OverTrimmed:
      return "OverTrimmed";
    case Errc::MemberMismatch:
      return "MemberMismatch";
    case Errc::NoSurvivors:
      return "NoSurvivors";
    case Errc::InvalidPipeline:
      return "InvalidPipeline";
    case Errc::NotReconstructible:
      return "NotReconstructible";
    case Errc::IncompleteTrace:
      return "IncompleteTrace";
    case Errc::ParseError:
      return "ParseError";
    case Errc::ValidationFailed:
      return "ValidationFailed";
    case Errc::IoError:
      return "IoError";
  }
  return "UnknownError";
}

}  // namespace hfl
