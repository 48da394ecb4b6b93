#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace itf {

/// Lowercases and splits text into word tokens: runs of [a-z0-9], reserved markers such
/// as "<ts>", and single punctuation characters. Whitespace only separates.
std::vector<std::string> split_words(std::string_view text);
/// split_words joined by single spaces.
std::string normalize_text(std::string_view text);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kTimeSeries = 4;
  static constexpr std::array<std::string_view, 5> kReserved{"<pad>", "<bos>", "<eos>", "<unk>", "<ts>"};

  Vocabulary();
  /// Reserved tokens first, then `words` in order with duplicates dropped.
  explicit Vocabulary(const std::vector<std::string>& words);

  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return tokens_.size(); }
  int id(std::string_view word) const;
  const std::string& token(int id) const;

  std::vector<int> encode(std::string_view text) const;
  /// Space-joined tokens; PAD, BOS and EOS are skipped.
  std::string decode(std::span<const int> ids) const;

 private:
  void insert(const std::string& word);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace itf
