#pragma once

// Shared test fixtures: scratch directories and small corpora.

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace testutil {

// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("lowml_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::string str() const { return path_.string(); }
    std::string sub(const std::string& rel) const { return (path_ / rel).string(); }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    f << content;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::string s((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return s;
}

// Small sentiment corpus: enough repetition that min_df=2 keeps the vocab.
inline std::vector<std::string> sentiment_texts() {
    return {
        "good good hotel",      "good nice room",   "nice good view",
        "good nice breakfast",  "bad bad hotel",    "bad awful room",
        "awful bad view",       "bad awful service",
    };
}

inline std::vector<std::string> sentiment_labels() {
    return {"pos", "pos", "pos", "pos", "neg", "neg", "neg", "neg"};
}

inline void write_sentiment_folder(const std::filesystem::path& root,
                                   const std::string& train = "train",
                                   const std::string& val = "test") {
    auto texts = sentiment_texts();
    auto labels = sentiment_labels();
    for (std::size_t i = 0; i < texts.size(); ++i)
        write_file(root / train / labels[i] / (std::to_string(i) + ".txt"), texts[i]);
    write_file(root / val / "pos" / "v0.txt", "good nice hotel");
    write_file(root / val / "pos" / "v1.txt", "nice good service");
    write_file(root / val / "neg" / "v2.txt", "bad awful hotel");
    write_file(root / val / "neg" / "v3.txt", "awful bad breakfast");
}

}  // namespace testutil
