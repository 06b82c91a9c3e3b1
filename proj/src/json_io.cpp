#include "mftg/json_io.hpp"

#include <cmath>
#include <cstdio>

namespace mftg {

std::string format_double17(double v) {
  if (std::isnan(v)) return "\"nan\"";
  if (std::isinf(v)) return v > 0 ? "\"inf\"" : "\"-inf\"";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

void dump_rec(const nlohmann::ordered_json& j, int indent, int depth,
              std::string& out) {
  using vt = nlohmann::ordered_json::value_t;
  switch (j.type()) {
    case vt::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      std::size_t i = 0;
      for (auto it = j.begin(); it != j.end(); ++it, ++i) {
        out.append(static_cast<std::size_t>(indent) * (depth + 1), ' ');
        out += nlohmann::ordered_json(it.key()).dump();
        out += ": ";
        dump_rec(it.value(), indent, depth + 1, out);
        if (i + 1 < j.size()) out += ',';
        out += '\n';
      }
      out.append(static_cast<std::size_t>(indent) * depth, ' ');
      out += '}';
      return;
    }
    case vt::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      bool scalars_only = true;
      for (const auto& e : j) {
        if (e.is_structured()) {
          scalars_only = false;
          break;
        }
      }
      if (scalars_only) {
        out += '[';
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          dump_rec(j[i], indent, depth, out);
        }
        out += ']';
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        out.append(static_cast<std::size_t>(indent) * (depth + 1), ' ');
        dump_rec(j[i], indent, depth + 1, out);
        if (i + 1 < j.size()) out += ',';
        out += '\n';
      }
      out.append(static_cast<std::size_t>(indent) * depth, ' ');
      out += ']';
      return;
    }
    case vt::number_float:
      out += format_double17(j.get<double>());
      return;
    default:
      out += j.dump();
      return;
  }
}

}  // namespace

std::string dump_json17(const nlohmann::ordered_json& j, int indent) {
  std::string out;
  dump_rec(j, indent, 0, out);
  out += '\n';
  return out;
}

}  // namespace mftg
