// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"

namespace idk {

using json = nlohmann::json;

// Compact single-line form used for every JSONL row. Invalid UTF-8 coming
// back from a model is replaced rather than aborting the write.
std::string dump_line(const json& row);

// Calls fn(row, line_number) for every non-blank line. Lines that are not
// valid JSON raise ParseError with the line number.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const json&, std::size_t)>& fn);

// Writes rows to a temporary sibling and renames it into place.
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

// Appends rows to a file from many threads. Each line is flushed whole.
class JsonlAppender {
 public:
  explicit JsonlAppender(const std::filesystem::path& path);

  void append(const json& row);

 private:
  std::mutex mu_;
  std::ofstream out_;
  std::string path_;
};

// Row field accessors that turn schema slips into ParseError.
namespace field {

const json& require(const json& row, const char* key, const std::string& file,
                    std::size_t line);
std::string string(const json& row, const char* key, const std::string& file,
                   std::size_t line);
long long integer(const json& row, const char* key, const std::string& file,
                  std::size_t line);
double number(const json& row, const char* key, const std::string& file,
              std::size_t line);
std::vector<std::string> strings(const json& row, const char* key,
                                 const std::string& file, std::size_t line);

}  // namespace field

}  // namespace idk
