// Copyright 2026 The SelfEmo Authors.
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

#ifndef SELFEMO_ARCHIVE_HPP_
#define SELFEMO_ARCHIVE_HPP_

#include <cstdint>
#include <string>

#include "selfemo/grpo.hpp"

namespace selfemo {

// One rollout as retained by the RL stage, with the quantities computed for
// its group.
struct ArchivedRollout {
  int iteration = 0;
  std::int64_t step = 0;      // optimizer step that consumed the group
  int index = 0;              // position within the group
  std::string archetype;      // last speaker of the prompt
  RolloutRecord record;
  double secondary_reward = 0.0;
  double advantage = 0.0;
  double ratio = 1.0;

  friend bool operator==(const ArchivedRollout&, const ArchivedRollout&) = default;
};

}  // namespace selfemo

#endif  // SELFEMO_ARCHIVE_HPP_
