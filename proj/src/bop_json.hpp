#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "surgsynth/bop_io.hpp"

namespace surgsynth::detail {

// %.17g; throws InvalidParam on non-finite values (not representable in JSON).
std::string fmt_real(double v);
std::string real_list(const double *values, std::size_t n);
std::string bbox_list(const BBox &b);

// Line-oriented emitter for the BOP index files: one top-level key per line,
// list items one per line, everything else compact.
class BopJsonWriter {
 public:
  void begin_object() { out_ = "{"; first_ = true; }
  void key(int k) {
    out_ += first_ ? "\n" : ",\n";
    first_ = false;
    out_ += "  \"" + std::to_string(k) + "\": ";
  }
  void raw(const std::string &value) { out_ += value; }
  void raw_list(const std::vector<std::string> &items) {
    if (items.empty()) {
      out_ += "[]";
      return;
    }
    out_ += "[\n";
    for (std::size_t i = 0; i < items.size(); ++i) out_ += "    " + items[i] + (i + 1 < items.size() ? ",\n" : "\n");
    out_ += "  ]";
  }
  void end_object() { out_ += first_ ? "}\n" : "\n}\n"; }
  const std::string &str() const { return out_; }

 private:
  std::string out_;
  bool first_ = true;
};

// Parses the three index files of a scene directory, checking types and key
// syntax only. Throws ParseError / SchemaError with a file/key path.
BopSceneRecord parse_scene_record(const std::filesystem::path &dir);

}  // namespace surgsynth::detail
