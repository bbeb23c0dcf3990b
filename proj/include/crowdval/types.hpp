#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace crowdval {

enum class Decision { Equivalent, NotEquivalent, NA };
enum class Origin { Manual, Prefill };

const char* to_string(Decision d);
const char* to_string(Origin o);
Decision decision_from_string(std::string_view text);
Origin origin_from_string(std::string_view text);

// Milliseconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

// "YYYY-MM-DDTHH:MM:SS.mmmZ"
std::string format_timestamp(Timestamp t);
// Accepts the format above (fraction and 'Z' optional) or a bare integer
// millisecond count. Throws BadRequest on anything else.
Timestamp parse_timestamp(std::string_view text);

}  // namespace crowdval
