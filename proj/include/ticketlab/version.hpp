#pragma once

namespace ticketlab {
inline constexpr const char* kVersion = "0.1.0";
}
