// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace fp4stream {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace fp4stream
