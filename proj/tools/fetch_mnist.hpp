#pragma once

// Download and verify the four MNIST IDX archives. Upstream mirrors publish
// MD5 digests for the .gz archives; a SHA256SUMS file is written next to them
// and checked on later runs. Raw (uncompressed) files placed by hand are
// accepted after a structural IDX check.

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <curl/curl.h>
#include <openssl/evp.h>

#include "gdo/errors.hpp"
#include "gdo/idx.hpp"

inline constexpr const char* kMnistBaseUrl = "https://ossci-datasets.s3.amazonaws.com/mnist/";

struct MnistFile {
  const char* name;
  const char* md5;
  bool images;
};

inline constexpr std::array<MnistFile, 4> kMnistFiles{{
    {"train-images-idx3-ubyte.gz", "f68b3c2dcbeaaa9fbdd348bbdeb94873", true},
    {"train-labels-idx1-ubyte.gz", "d53e105ee54ea40749a09fcbcd1e9432", false},
    {"t10k-images-idx3-ubyte.gz", "9fb629c4189551a2d022fa330f9573f3", true},
    {"t10k-labels-idx1-ubyte.gz", "ec29112dd5afa0611ce80d1b7f02629c", false},
}};

struct FetchReport {
  std::vector<std::string> log;
};

inline std::string hex_digest(const gdo::Bytes& data, const EVP_MD* md) {
  unsigned char out[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out, &len, md, nullptr) != 1) throw gdo::IoError("digest failed");
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned int i = 0; i < len; ++i) {
    s += hex[out[i] >> 4];
    s += hex[out[i] & 15];
  }
  return s;
}

inline gdo::Bytes http_get(const std::string& url) {
  CURL* curl = curl_easy_init();
  if (!curl) throw gdo::IoError("curl init failed");
  gdo::Bytes body;
  auto sink = +[](char* ptr, std::size_t size, std::size_t n, void* user) -> std::size_t {
    auto* b = static_cast<gdo::Bytes*>(user);
    b->insert(b->end(), reinterpret_cast<unsigned char*>(ptr), reinterpret_cast<unsigned char*>(ptr) + size * n);
    return size * n;
  };
  curl_easy_setopt(curl, CURLOPT_URL, url.c_str());
  curl_easy_setopt(curl, CURLOPT_FOLLOWLOCATION, 1L);
  curl_easy_setopt(curl, CURLOPT_FAILONERROR, 1L);
  curl_easy_setopt(curl, CURLOPT_CONNECTTIMEOUT, 30L);
  curl_easy_setopt(curl, CURLOPT_WRITEFUNCTION, sink);
  curl_easy_setopt(curl, CURLOPT_WRITEDATA, &body);
  CURLcode rc = curl_easy_perform(curl);
  curl_easy_cleanup(curl);
  if (rc != CURLE_OK) throw gdo::IoError("download failed: " + url + ": " + curl_easy_strerror(rc));
  return body;
}

inline std::map<std::string, std::string> read_sums(const std::filesystem::path& p) {
  std::map<std::string, std::string> sums;
  std::ifstream in(p);
  std::string digest, name;
  while (in >> digest >> name) sums[name] = digest;
  return sums;
}

inline void check_structure(const gdo::Bytes& raw, const MnistFile& f) {
  if (f.images)
    gdo::parse_idx_images(raw, f.name);
  else
    gdo::parse_idx_labels(raw, f.name);
}

inline FetchReport fetch_mnist(const std::filesystem::path& dir, const std::string& base_url, bool offline) {
  namespace fs = std::filesystem;
  FetchReport rep;
  fs::create_directories(dir);
  const fs::path sums_path = dir / "SHA256SUMS";
  auto known = read_sums(sums_path);
  std::map<std::string, std::string> sums;

  for (const auto& f : kMnistFiles) {
    const fs::path gz = dir / f.name;
    const std::string raw_name = std::string(f.name).substr(0, std::string(f.name).size() - 3);
    const fs::path raw = dir / raw_name;
    std::string name;
    gdo::Bytes bytes;
    if (fs::exists(gz)) {
      name = f.name;
      bytes = gdo::read_file_bytes(gz);
    } else if (fs::exists(raw)) {
      name = raw_name;
      bytes = gdo::read_file_bytes(raw);
    } else if (offline) {
      throw gdo::IoError("missing " + gz.string() + " (offline)");
    } else {
      name = f.name;
      bytes = http_get(base_url + f.name);
      rep.log.push_back("downloaded " + name + " (" + std::to_string(bytes.size()) + " bytes)");
    }

    const std::string sha = hex_digest(bytes, EVP_sha256());
    if (name == f.name) {
      const std::string md5 = hex_digest(bytes, EVP_md5());
      if (md5 != f.md5) throw gdo::FormatError(name + ": md5 " + md5 + " does not match published " + f.md5);
    }
    if (auto it = known.find(name); it != known.end() && it->second != sha)
      throw gdo::FormatError(name + ": sha256 " + sha + " does not match SHA256SUMS entry " + it->second);
    check_structure(bytes, f);
    if (!fs::exists(dir / name)) gdo::write_file_bytes(dir / name, bytes);
    sums[name] = sha;
    rep.log.push_back("ok " + name + " sha256=" + sha);
  }

  std::ostringstream out;
  for (const auto& [name, sha] : sums) out << sha << "  " << name << "\n";
  std::ofstream(sums_path) << out.str();
  rep.log.push_back("wrote " + sums_path.string());
  return rep;
}
