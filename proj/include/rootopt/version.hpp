#pragma once

#define ROOTOPT_VERSION "0.1.0"

namespace rootopt {
inline const char* version() { return ROOTOPT_VERSION; }
}
