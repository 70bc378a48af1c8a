// SPDX-License-Identifier: Apache-2.0
#include <edgecloud/bytes.hpp>
#include <edgecloud/error.hpp>

#include <fstream>
#include <iterator>

namespace edgecloud {

const char *to_string(ErrorKind kind) noexcept {
  switch (kind) {
  case ErrorKind::Shape:
    return "shape error";
  case ErrorKind::Input:
    return "input error";
  case ErrorKind::Numeric:
    return "numeric error";
  case ErrorKind::State:
    return "state error";
  case ErrorKind::Protocol:
    return "protocol error";
  case ErrorKind::Parse:
    return "parse error";
  case ErrorKind::Config:
    return "config error";
  case ErrorKind::Network:
    return "network error";
  case ErrorKind::File:
    return "file error";
  }
  return "error";
}

std::vector<std::uint8_t> read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    fail(ErrorKind::File, "cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::string &path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    fail(ErrorKind::File, "cannot write " + path);
  out.write(reinterpret_cast<const char *>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out)
    fail(ErrorKind::File, "short write to " + path);
}

} // namespace edgecloud
