#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "divctl/error.hpp"

namespace divctl::base64 {

inline std::string encode(std::string_view in) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((in.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < in.size(); i += 3) {
    std::uint32_t v = (std::uint8_t(in[i]) << 16) | (std::uint8_t(in[i + 1]) << 8) |
                      std::uint8_t(in[i + 2]);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (i < in.size()) {
    std::uint32_t v = std::uint8_t(in[i]) << 16;
    if (i + 1 < in.size()) v |= std::uint8_t(in[i + 1]) << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += (i + 1 < in.size()) ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

/// Throws MalformedResponse on characters outside the standard alphabet.
inline std::string decode(std::string_view in) {
  static constexpr auto kTable = [] {
    std::array<int, 256> t{};
    t.fill(-1);
    for (int c = 'A'; c <= 'Z'; ++c) t[c] = c - 'A';
    for (int c = 'a'; c <= 'z'; ++c) t[c] = c - 'a' + 26;
    for (int c = '0'; c <= '9'; ++c) t[c] = c - '0' + 52;
    t['+'] = 62;
    t['/'] = 63;
    return t;
  }();
  std::string out;
  std::uint32_t buffer = 0;
  int bits = 0;
  std::size_t padding = 0;
  for (char ch : in) {
    if (ch == '=') {
      ++padding;
      continue;
    }
    if (ch == '\n' || ch == '\r') continue;
    int v = kTable[static_cast<unsigned char>(ch)];
    if (v < 0 || padding > 0) fail(Errc::MalformedResponse, "invalid base64 payload");
    buffer = (buffer << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out += static_cast<char>((buffer >> bits) & 0xFF);
    }
  }
  if (padding > 2) fail(Errc::MalformedResponse, "invalid base64 padding");
  return out;
}

}  // namespace divctl::base64
