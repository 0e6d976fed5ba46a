#ifndef PCRISK_DATE_HPP
#define PCRISK_DATE_HPP

#include <charconv>
#include <chrono>
#include <string>
#include <string_view>

#include <fmt/format.h>

#include "pcrisk/error.hpp"

namespace pcrisk {

using Date = std::chrono::year_month_day;

namespace detail {

inline bool parse_uint(std::string_view s, unsigned& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace detail

/// Parses "YYYY-MM-DD" or "YYYY-MM" (day 1). A trailing time part ("T..." or
/// " ...") is ignored.
inline Date parse_date(std::string_view text) {
  auto cut = text.find_first_of("T ");
  if (cut != std::string_view::npos) text = text.substr(0, cut);
  unsigned y = 0, m = 0, d = 1;
  bool ok = false;
  if (text.size() == 10 && text[4] == '-' && text[7] == '-') {
    ok = detail::parse_uint(text.substr(0, 4), y) && detail::parse_uint(text.substr(5, 2), m) &&
         detail::parse_uint(text.substr(8, 2), d);
  } else if (text.size() == 7 && text[4] == '-') {
    ok = detail::parse_uint(text.substr(0, 4), y) && detail::parse_uint(text.substr(5, 2), m);
  }
  Date date{std::chrono::year{static_cast<int>(y)}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ok || !date.ok()) {
    throw Error(Errc::invalid_input, "unparseable date '" + std::string(text) + "'");
  }
  return date;
}

inline std::string format_date(const Date& d) {
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(d.year()),
                     static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
}

inline Date first_of_month(const Date& d) {
  return Date{d.year(), d.month(), std::chrono::day{1}};
}

inline Date add_months(const Date& d, int months) {
  auto ym = std::chrono::year_month{d.year(), d.month()} + std::chrono::months{months};
  return Date{ym.year(), ym.month(), std::chrono::day{1}};
}

/// Inclusive calendar window.
struct DateWindow {
  Date first;
  Date last;

  [[nodiscard]] bool contains(const Date& d) const { return first <= d && d <= last; }

  void validate() const {
    if (!first.ok() || !last.ok() || last < first) {
      throw Error(Errc::invalid_input,
                  "inverted date window " + format_date(first) + ".." + format_date(last));
    }
  }
};

/// January 2015 through September 2022.
inline DateWindow default_study_window() {
  using namespace std::chrono;
  return {Date{year{2015}, January, day{1}}, Date{year{2022}, September, day{30}}};
}

}  // namespace pcrisk

#endif  // PCRISK_DATE_HPP
