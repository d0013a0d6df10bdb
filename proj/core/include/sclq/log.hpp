#pragma once

#include <functional>
#include <string_view>

namespace sclq {

using WarningSink = std::function<void(std::string_view)>;

/// Replace the warning sink (default: one line on stderr). Pass an empty
/// function to silence warnings. Returns the previous sink.
WarningSink set_warning_sink(WarningSink sink);

void warn(std::string_view message);

}  // namespace sclq
