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

#include <string>

#include "dgr/image_io.hpp"
#include "dgr/nets.hpp"

namespace dgr {

/// Bad magic, truncation, or a tensor set that does not match the target.
class CheckpointError : public IoError {
 public:
  using IoError::IoError;
};

inline constexpr char kCheckpointMagic[8] = {'D', 'G', 'R', 'C', 'K', 'P', 'T', '1'};

/// Binary layout (little endian): magic "DGRCKPT1", u32 tensor count, then per
/// tensor: u16 name length, name bytes, u8 rank, u32 dims[rank], f32 payload.
/// The file is written to a temporary sibling and renamed into place.
void save_tensors(const std::string& path, const NamedParams<float>& tensors);

/// Reads every tensor; throws CheckpointError on any format problem.
NamedParams<float> read_tensors(const std::string& path);

/// Copies `stored` into `targets` by name. Every target must be present with a
/// matching shape; nothing is written unless all of them match.
void assign_tensors(const NamedParams<float>& stored, const NamedParams<float>& targets);

}  // namespace dgr
