#include "crowdval/types.hpp"

#include <cctype>
#include <chrono>
#include <cstdio>

#include "crowdval/error.hpp"

namespace crowdval {

const char* to_string(Decision d) {
  switch (d) {
    case Decision::Equivalent: return "Equivalent";
    case Decision::NotEquivalent: return "NotEquivalent";
    case Decision::NA: return "NA";
  }
  return "NA";
}

const char* to_string(Origin o) { return o == Origin::Manual ? "manual" : "prefill"; }

Decision decision_from_string(std::string_view text) {
  if (text == "Equivalent") return Decision::Equivalent;
  if (text == "NotEquivalent") return Decision::NotEquivalent;
  if (text == "NA" || text == "N/A") return Decision::NA;
  throw Error(ErrorCode::BadRequest, "decision must be Equivalent, NotEquivalent or NA");
}

Origin origin_from_string(std::string_view text) {
  if (text == "manual") return Origin::Manual;
  if (text == "prefill") return Origin::Prefill;
  throw Error(ErrorCode::BadRequest, "origin must be manual or prefill");
}

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  sys_time<milliseconds> tp{milliseconds{t}};
  auto day = floor<days>(tp);
  year_month_day ymd{day};
  hh_mm_ss hms{tp - day};
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lld.%03lldZ", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()), static_cast<long long>(hms.hours().count()),
                static_cast<long long>(hms.minutes().count()),
                static_cast<long long>(hms.seconds().count()),
                static_cast<long long>(hms.subseconds().count()));
  return buf;
}

Timestamp parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  std::string s(text);
  bool numeric = !s.empty() && s.find_first_not_of("-0123456789") == std::string::npos;
  if (numeric) {
    try {
      return std::stoll(s);
    } catch (const std::exception&) {
      throw Error(ErrorCode::BadRequest, "timestamp out of range: " + s);
    }
  }
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  int consumed = 0;
  if (std::sscanf(s.c_str(), "%4d-%2u-%2uT%2u:%2u:%2u%n", &y, &mo, &d, &h, &mi, &sec, &consumed) != 6) {
    throw Error(ErrorCode::BadRequest, "timestamp must be ISO-8601 UTC or epoch milliseconds: " + s);
  }
  std::string rest = s.substr(static_cast<std::size_t>(consumed));
  long long ms = 0;
  if (!rest.empty() && rest[0] == '.') {
    std::size_t i = 1;
    long long scale = 100;
    while (i < rest.size() && std::isdigit(static_cast<unsigned char>(rest[i]))) {
      ms += (rest[i] - '0') * scale;
      scale /= 10;
      ++i;
    }
    rest = rest.substr(i);
  }
  if (!(rest.empty() || rest == "Z")) {
    throw Error(ErrorCode::BadRequest, "timestamp must be UTC ('Z' suffix): " + s);
  }
  year_month_day ymd{year{y}, month{mo}, day{d}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) {
    throw Error(ErrorCode::BadRequest, "invalid calendar timestamp: " + s);
  }
  auto tp = sys_days{ymd} + hours{h} + minutes{mi} + seconds{sec} + milliseconds{ms};
  return tp.time_since_epoch().count();
}

}  // namespace crowdval
