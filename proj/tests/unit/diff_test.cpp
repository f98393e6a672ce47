#include <gtest/gtest.h>

#include "failpass/diff.hpp"
#include "failpass/error.hpp"
#include "support/support.hpp"

using namespace failpass;

namespace {

DiffMetrics diff_maps(const fpt::FileMap& a, const fpt::FileMap& b) {
  fpt::TempDir dir;
  fpt::write_tree(dir / "a", a);
  fpt::write_tree(dir / "b", b);
  std::filesystem::create_directories(dir / "a");
  std::filesystem::create_directories(dir / "b");
  return compute_diff_metrics(dir / "a", dir / "b");
}

std::vector<std::string> as_strings(const std::vector<std::string_view>& v) {
  return {v.begin(), v.end()};
}

}  // namespace

TEST(SplitLines, KeepsTerminators) {
  EXPECT_EQ(as_strings(split_lines("a\nb\n")), (std::vector<std::string>{"a\n", "b\n"}));
  EXPECT_EQ(as_strings(split_lines("a\nb")), (std::vector<std::string>{"a\n", "b"}));
  EXPECT_TRUE(split_lines("").empty());
  EXPECT_EQ(as_strings(split_lines("\n\n")), (std::vector<std::string>{"\n", "\n"}));
}

TEST(DiffFile, ModifiedLineCountsTwice) {
  auto m = diff_file("a\nb\nc\n", "a\nB\nc\n");
  EXPECT_EQ(m.num_changes, 2);
  EXPECT_EQ(m.additions, 1);
  EXPECT_EQ(m.deletions, 1);
  EXPECT_EQ(m.num_files_changed, 1);
  EXPECT_EQ(diff_file("x\n", "x\n"), DiffMetrics{});
  EXPECT_EQ(diff_file("a\nb\n", "a\nb").num_changes, 2);  // final newline dropped
}

TEST(DiffFile, BinaryContent) {
  const std::string bin1("\x89PNG\0\1", 6), bin2("\x89PNG\0\2", 6);
  EXPECT_TRUE(looks_binary(bin1));
  EXPECT_FALSE(looks_binary("text\n"));
  auto m = diff_file(bin1, bin2);
  EXPECT_EQ(m.num_changes, 2);
  EXPECT_EQ(m.num_files_changed, 1);
  EXPECT_EQ(diff_file(bin1, bin1), DiffMetrics{});
}

TEST(ComputeDiff, ExampleTrees) {
  const fpt::FileMap base = {{"src/A.java", "class A {\n  int x;\n}\n"}, {"README", "hello\n"}};
  EXPECT_EQ(diff_maps(base, base), DiffMetrics{});

  auto one_line = base;
  one_line["src/A.java"] = "class A {\n  long x;\n}\n";
  auto m = diff_maps(base, one_line);
  EXPECT_EQ(m.num_changes, 2);
  EXPECT_EQ(m.num_files_changed, 1);

  auto added = base;
  added["src/B.java"] = "1\n2\n3\n4\n5\n6\n7\n8\n9\n10\n";
  m = diff_maps(base, added);
  EXPECT_EQ(m.num_changes, 10);
  EXPECT_EQ(m.num_files_changed, 1);
  EXPECT_EQ(m.additions, 10);
  m = diff_maps(added, base);
  EXPECT_EQ(m.num_changes, 10);
  EXPECT_EQ(m.deletions, 10);

  fpt::FileMap renamed = {{"src/main/A.java", base.at("src/A.java")}, {"README", "hello\n"}};
  m = diff_maps(base, renamed);
  EXPECT_EQ(m.num_changes, 0);
  EXPECT_EQ(m.num_files_changed, 1);
  EXPECT_EQ(m.renames, 1);
}

TEST(ComputeDiff, IgnoresGitDirectories) {
  fpt::TempDir dir;
  fpt::write_tree(dir / "a", {{"f", "1\n"}, {".git/HEAD", "ref: a\n"}});
  fpt::write_tree(dir / "b", {{"f", "1\n"}, {".git/HEAD", "ref: b\n"}, {".git/objects/x", "y"}});
  EXPECT_EQ(compute_diff_metrics(dir / "a", dir / "b"), DiffMetrics{});
  EXPECT_THROW(compute_diff_metrics(dir / "a", dir / "missing"), Error);
}

TEST(LineEditDistance, MatchesLcsOracle) {
  auto& g = fpt::rng();
  for (int round = 0; round < 2000; ++round) {
    std::vector<std::string> a, b;
    for (std::size_t i = g() % 30; i > 0; --i) a.push_back(std::string(1, static_cast<char>('a' + g() % 4)));
    for (std::size_t i = g() % 30; i > 0; --i) b.push_back(std::string(1, static_cast<char>('a' + g() % 4)));
    std::vector<std::string_view> av(a.begin(), a.end()), bv(b.begin(), b.end());
    const auto expected = static_cast<std::int64_t>(a.size() + b.size()) - 2 * fpt::lcs_length(a, b);
    ASSERT_EQ(line_edit_distance(av, bv), expected);
  }
}

TEST(ComputeDiff, AgreesWithOracleAndIsSymmetric) {
  auto& g = fpt::rng();
  for (int round = 0; round < 100; ++round) {
    auto [before, after] = fpt::random_tree_pair(g);
    const auto expected = fpt::oracle_diff(before, after);
    const auto forward = diff_maps(before, after);
    ASSERT_EQ(forward.num_changes, expected.changes) << "round " << round;
    ASSERT_EQ(forward.num_files_changed, expected.files) << "round " << round;
    EXPECT_EQ(forward.num_changes, forward.additions + forward.deletions);
    const auto backward = diff_maps(after, before);
    EXPECT_EQ(backward.num_changes, forward.num_changes);
    EXPECT_EQ(backward.num_files_changed, forward.num_files_changed);
    EXPECT_EQ(backward.additions, forward.deletions);
    EXPECT_EQ(diff_maps(before, before), DiffMetrics{});
  }
}
