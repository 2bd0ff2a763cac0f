#include "canopyscan/common/time.hpp"

#include <cstdio>

#include "canopyscan/common/errors.hpp"

namespace canopyscan {

namespace {

int digits(std::string_view text, std::size_t pos, std::size_t count) {
  if (pos + count > text.size()) throw ValidationError("truncated timestamp: " + std::string(text));
  int value = 0;
  for (std::size_t i = pos; i < pos + count; ++i) {
    char c = text[i];
    if (c < '0' || c > '9') throw ValidationError("malformed timestamp: " + std::string(text));
    value = value * 10 + (c - '0');
  }
  return value;
}

void expect(std::string_view text, std::size_t pos, char c) {
  if (pos >= text.size() || (text[pos] != c && !(c == 'T' && (text[pos] == 't' || text[pos] == ' '))))
    throw ValidationError("malformed timestamp: " + std::string(text));
}

}  // namespace

UtcTime parse_rfc3339(std::string_view text) {
  using namespace std::chrono;
  const int yr = digits(text, 0, 4);
  expect(text, 4, '-');
  const int mo = digits(text, 5, 2);
  expect(text, 7, '-');
  const int dy = digits(text, 8, 2);
  expect(text, 10, 'T');
  const int hh = digits(text, 11, 2);
  expect(text, 13, ':');
  const int mm = digits(text, 14, 2);
  expect(text, 16, ':');
  const int ss = digits(text, 17, 2);

  const year_month_day ymd{year{yr}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(dy)}};
  if (!ymd.ok() || hh > 23 || mm > 59 || ss > 60)
    throw ValidationError("timestamp out of range: " + std::string(text));

  std::size_t pos = 19;
  long long millis = 0;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    int scale = 100;
    std::size_t start = pos;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      millis += (text[pos] - '0') * scale;
      scale /= 10;
      ++pos;
    }
    if (pos == start) throw ValidationError("malformed fraction: " + std::string(text));
  }

  long long offset_minutes = 0;
  if (pos < text.size() && (text[pos] == 'Z' || text[pos] == 'z')) {
    ++pos;
  } else if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
    const int sign = text[pos] == '-' ? -1 : 1;
    const int oh = digits(text, pos + 1, 2);
    expect(text, pos + 3, ':');
    const int om = digits(text, pos + 4, 2);
    offset_minutes = sign * (oh * 60 + om);
    pos += 6;
  } else {
    throw ValidationError("timestamp lacks UTC designator: " + std::string(text));
  }
  if (pos != text.size()) throw ValidationError("trailing characters in timestamp: " + std::string(text));

  const sys_days date{ymd};
  auto t = time_point_cast<milliseconds>(date) + hours{hh} + minutes{mm} + seconds{ss} +
           milliseconds{millis} - minutes{offset_minutes};
  return t;
}

std::string format_rfc3339(UtcTime t) {
  using namespace std::chrono;
  const auto day_point = floor<days>(t);
  const year_month_day ymd{day_point};
  auto rem = t - day_point;
  const auto h = duration_cast<hours>(rem);
  rem -= h;
  const auto m = duration_cast<minutes>(rem);
  rem -= m;
  const auto s = duration_cast<seconds>(rem);
  rem -= s;
  const long long ms = rem.count();

  char buf[40];
  if (ms == 0) {
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02lldZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(h.count()), static_cast<int>(m.count()),
                  static_cast<long long>(s.count()));
  } else {
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02lld.%03lldZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(h.count()), static_cast<int>(m.count()),
                  static_cast<long long>(s.count()), ms);
  }
  return buf;
}

UtcTime from_unix_millis(long long ms) {
  return UtcTime{std::chrono::milliseconds{ms}};
}

long long to_unix_millis(UtcTime t) {
  return t.time_since_epoch().count();
}

}  // namespace canopyscan
