// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <charconv>
#include <fstream>
#include <cctype>
#include <map>
#include <optional>
#include <ostream>

#include "json.hpp"
#include "vagg/errors.hpp"
#include "vagg/io.hpp"

namespace vagg {

using nlohmann::json;

void write_dataset(std::ostream& out, const Dataset& data) {
  for (const Subject& s : data) {
    json still = {{"subject", s.id}, {"kind", "still"}, {"values", s.still}};
    out << still.dump() << '\n';
    const std::string video = s.id + "_v0";
    for (std::size_t k = 0; k < s.frames.size(); ++k) {
      json frame = {{"subject", s.id}, {"kind", "frame"}, {"video", video}, {"frame", k}};
      if (!s.corrupted.empty()) frame["corrupted"] = static_cast<bool>(s.corrupted[k]);
      frame["values"] = s.frames[k];
      out << frame.dump() << '\n';
    }
  }
}

Dataset read_dataset(std::istream& in) {
  struct Pending {
    bool has_still = false;
    Embedding still;
    std::string video;
    std::map<std::size_t, std::pair<Embedding, std::optional<bool>>> frames;
  };
  std::vector<std::string> order;
  std::map<std::string, Pending> by_id;
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || std::all_of(line.begin(), line.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); })) {
      continue;
    }
    const std::string where = "dataset line " + std::to_string(line_no) + ": ";
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(where + "malformed JSON (" + e.what() + ")");
    }
    try {
      const auto id = rec.at("subject").get<std::string>();
      const auto kind = rec.at("kind").get<std::string>();
      auto values = rec.at("values").get<std::vector<double>>();
      if (values.empty()) throw ValidationError(where + "empty values");
      if (dim == 0) dim = values.size();
      if (values.size() != dim) {
        throw ValidationError(where + "dim " + std::to_string(values.size()) + " != " +
                              std::to_string(dim));
      }
      auto [it, inserted] = by_id.try_emplace(id);
      if (inserted) order.push_back(id);
      Pending& p = it->second;
      if (kind == "still") {
        if (p.has_still) throw ValidationError(where + "second still for subject " + id);
        p.has_still = true;
        p.still = std::move(values);
      } else if (kind == "frame") {
        const auto video = rec.at("video").get<std::string>();
        if (!p.video.empty() && p.video != video) {
          throw ValidationError(where + "subject " + id + " has more than one video");
        }
        p.video = video;
        const auto index = rec.at("frame").get<std::size_t>();
        std::optional<bool> corrupted;
        if (rec.contains("corrupted")) corrupted = rec.at("corrupted").get<bool>();
        if (!p.frames.try_emplace(index, std::move(values), corrupted).second) {
          throw ValidationError(where + "duplicate frame " + std::to_string(index));
        }
      } else {
        throw ValidationError(where + "unknown kind '" + kind + "'");
      }
    } catch (const json::exception& e) {
      throw ValidationError(where + e.what());
    }
  }

  Dataset data;
  data.reserve(order.size());
  for (const std::string& id : order) {
    Pending& p = by_id.at(id);
    if (!p.has_still) throw ValidationError("dataset: subject " + id + " has no still");
    if (p.frames.empty()) throw ValidationError("dataset: subject " + id + " has no frames");
    Subject s;
    s.id = id;
    s.still = std::move(p.still);
    const bool labelled = p.frames.begin()->second.second.has_value();
    for (auto& [idx, f] : p.frames) {
      s.frames.push_back(std::move(f.first));
      if (labelled) s.corrupted.push_back(f.second.value_or(false));
    }
    data.push_back(std::move(s));
  }
  return data;
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open " + path.string() + " for writing");
  write_dataset(out, data);
  if (!out) throw ValidationError("write failed: " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open dataset " + path.string());
  return read_dataset(in);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

}  // namespace vagg
