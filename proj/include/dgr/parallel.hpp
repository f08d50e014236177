// Copyright 2026 The DGR Lab Authors. All Rights Reserved.
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

#include <functional>
#include <optional>

#include "dgr/tensor.hpp"

namespace dgr {

/// Worker count: the explicit flag when given, else DGR_THREADS, else 1.
int resolve_threads(std::optional<int> flag);

/// Runs body(i) for i in [0, n) on up to `threads` workers. Work is split into
/// contiguous index blocks; callers write results by index, so output does not
/// depend on timing. The first exception thrown by any worker is rethrown.
void parallel_for(Index n, int threads, const std::function<void(Index)>& body);

}  // namespace dgr
