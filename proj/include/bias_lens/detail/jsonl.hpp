#pragma once

#include <fstream>
#include <string>

#include "bias_lens/error.hpp"

namespace bias_lens {

template <typename Fn>
void for_each_jsonl_record(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw RuntimeError("cannot open " + path.string());
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_number) +
                            ": malformed JSON: " + e.what());
    }
    if (!record.is_object()) {
      throw ValidationError(path.string() + ":" + std::to_string(line_number) +
                            ": expected a JSON object");
    }
    try {
      fn(line_number, record);
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_number) + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_number) + ": " + e.what());
    }
  }
}

}  // namespace bias_lens
