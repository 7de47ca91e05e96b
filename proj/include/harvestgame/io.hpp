#pragma once

#include <iosfwd>
#include <string>

namespace harvestgame::io {

/// Shortest round-trip decimal form, locale independent ('.' decimal point,
/// no grouping). All CSV and JSON number output funnels through here so
/// reruns are byte-identical.
std::string format_double(double v);

/// value rounded to the given number of significant decimals; used when a
/// quantity feeds a fingerprint rather than a report.
double round_to(double v, double quantum);

}  // namespace harvestgame::io
