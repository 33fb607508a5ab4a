// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "idk/jsonl.hpp"

#include <sstream>
#include <system_error>

#include "idk/errors.hpp"

namespace fs = std::filesystem;

namespace idk {

std::string dump_line(const json& row) {
  return row.dump(-1, ' ', false, json::error_handler_t::replace);
}

void for_each_jsonl(const fs::path& path,
                    const std::function<void(const json&, std::size_t)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(path.string(), line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!row.is_object()) throw ParseError(path.string(), line_no, "expected a JSON object");
    fn(row, line_no);
  }
}

void write_text_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) {
      throw Error("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
    }
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
    out << content;
    if (!out) throw Error("failed while writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error("cannot move '" + tmp.string() + "' into place: " + ec.message());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_jsonl(const fs::path& path, const std::vector<json>& rows) {
  std::string out;
  for (const auto& row : rows) {
    out += dump_line(row);
    out += '\n';
  }
  write_text_file(path, out);
}

JsonlAppender::JsonlAppender(const fs::path& path) : path_(path.string()) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  out_.open(path, std::ios::binary | std::ios::app);
  if (!out_) throw Error("cannot open '" + path_ + "' for append");
}

void JsonlAppender::append(const json& row) {
  const std::string line = dump_line(row) + '\n';
  std::lock_guard lock(mu_);
  out_ << line;
  out_.flush();
  if (!out_) throw Error("failed while appending to '" + path_ + "'");
}

namespace field {

const json& require(const json& row, const char* key, const std::string& file,
                    std::size_t line) {
  auto it = row.find(key);
  if (it == row.end()) throw ParseError(file, line, std::string("missing field \"") + key + "\"");
  return *it;
}

std::string string(const json& row, const char* key, const std::string& file,
                   std::size_t line) {
  const json& v = require(row, key, file, line);
  if (!v.is_string()) throw ParseError(file, line, std::string("field \"") + key + "\" must be a string");
  return v.get<std::string>();
}

long long integer(const json& row, const char* key, const std::string& file,
                  std::size_t line) {
  const json& v = require(row, key, file, line);
  if (!v.is_number_integer()) {
    throw ParseError(file, line, std::string("field \"") + key + "\" must be an integer");
  }
  return v.get<long long>();
}

double number(const json& row, const char* key, const std::string& file,
              std::size_t line) {
  const json& v = require(row, key, file, line);
  if (!v.is_number()) throw ParseError(file, line, std::string("field \"") + key + "\" must be a number");
  return v.get<double>();
}

std::vector<std::string> strings(const json& row, const char* key,
                                 const std::string& file, std::size_t line) {
  const json& v = require(row, key, file, line);
  if (!v.is_array()) throw ParseError(file, line, std::string("field \"") + key + "\" must be an array");
  std::vector<std::string> out;
  out.reserve(v.size());
  for (const auto& s : v) {
    if (!s.is_string()) {
      throw ParseError(file, line, std::string("field \"") + key + "\" must contain only strings");
    }
    out.push_back(s.get<std::string>());
  }
  return out;
}

}  // namespace field

}  // namespace idk
