// Copyright 2026 The ctrlode authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace ctrlode {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ctrlode
