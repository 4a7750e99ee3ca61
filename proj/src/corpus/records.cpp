#include "bbp/corpus/records.hpp"

#include <cstdio>
#include <set>

#include "bbp/errors.hpp"

namespace bbp {

namespace {

constexpr std::string_view kFieldSep = "; ";
constexpr std::string_view kNameOpen = " (";
constexpr std::string_view kNameClose = "): ";

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string format_aligned_record(const std::vector<AlignedField>& fields) {
  std::set<std::string> seen;
  std::string out;
  for (const auto& f : fields) {
    if (f.name.empty()) throw InvalidArgument("field name must not be empty");
    if (!seen.insert(f.name).second) throw InvalidArgument("duplicate field name '" + f.name + "'");
    for (const std::string* part : {&f.name, &f.value, &f.caption}) {
      if (part->find(kFieldSep) != std::string::npos || part->find(kNameClose) != std::string::npos) {
        throw InvalidArgument("field '" + f.name + "' contains a record delimiter");
      }
    }
    if (f.name.find(kNameOpen) != std::string::npos || f.name.find(')') != std::string::npos) {
      throw InvalidArgument("field name '" + f.name + "' contains a parenthesis");
    }
    if (!out.empty()) out += kFieldSep;
    out += f.caption;
    out += kNameOpen;
    out += f.name;
    out += kNameClose;
    out += f.value;
  }
  return out;
}

std::vector<AlignedField> parse_aligned_record(std::string_view text) {
  std::vector<AlignedField> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find(kFieldSep, pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view item = text.substr(pos, end - pos);
    const std::size_t close = item.find(kNameClose);
    if (close == std::string_view::npos) throw ParseError("field without '): '", pos);
    const std::size_t open = item.rfind(kNameOpen, close);
    if (open == std::string_view::npos) throw ParseError("field without ' ('", pos);
    AlignedField f;
    f.caption = std::string(item.substr(0, open));
    f.name = std::string(item.substr(open + kNameOpen.size(), close - open - kNameOpen.size()));
    f.value = std::string(item.substr(close + kNameClose.size()));
    out.push_back(std::move(f));
    pos = end == text.size() ? end : end + kFieldSep.size();
  }
  return out;
}

std::vector<AlignedField> jet_fields(double delta_eta, double delta_phi, double log_pt, double log_e) {
  return {
      {"Δη", fixed6(delta_eta), "Difference in pseudorapidity between the particle and the jet axis"},
      {"Δφ", fixed6(delta_phi), "Difference in azimuthal angle between the particle and the jet axis"},
      {"log Pt", fixed6(log_pt), "Logarithm of the particle's transverse momentum"},
      {"log E", fixed6(log_e), "Logarithm of the particle's energy"},
  };
}

}  // namespace bbp
