#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "miti/corpus.hpp"
#include "miti/embedder.hpp"
#include "miti/evaluation.hpp"
#include "miti/retrieval.hpp"

namespace {

// Roughly the size of the full Windows API reference: a few thousand
// functions, some split into several chunks.
miti::VectorIndex make_index(std::size_t functions, std::size_t dims) {
    miti::DeterministicEmbedder embedder(dims);
    miti::VectorIndex index(dims);
    std::mt19937_64 rng(1);
    for (std::size_t f = 0; f < functions; ++f) {
        const auto api = "fn" + std::to_string(f);
        const auto chunks = 1 + rng() % 3;
        for (std::size_t c = 0; c < chunks; ++c) {
            const auto id = api + "#" + std::to_string(c);
            index.add({id, api, embedder.embed(id), ""});
        }
    }
    return index;
}

void BM_Search(benchmark::State& state) {
    const auto index = make_index(static_cast<std::size_t>(state.range(0)), 768);
    const miti::DeterministicEmbedder embedder(768);
    const auto query = embedder.embed("terminate a running process");
    for (auto _ : state) benchmark::DoNotOptimize(miti::search(index, query, 10));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(index.size()));
}
BENCHMARK(BM_Search)->Arg(500)->Arg(2637);

void BM_SearchApiLevel(benchmark::State& state) {
    const auto index = make_index(static_cast<std::size_t>(state.range(0)), 768);
    const miti::DeterministicEmbedder embedder(768);
    const auto query = embedder.embed("terminate a running process");
    for (auto _ : state) benchmark::DoNotOptimize(miti::search_api_level(index, query, 54));
}
BENCHMARK(BM_SearchApiLevel)->Arg(2637);

void BM_Embed(benchmark::State& state) {
    const miti::DeterministicEmbedder embedder(768);
    for (auto _ : state) benchmark::DoNotOptimize(embedder.embed("open the machine Run key"));
}
BENCHMARK(BM_Embed);

void BM_Chunk(benchmark::State& state) {
    std::mt19937_64 rng(2);
    std::string doc;
    const char* words[] = {"the ", "registry ", "key ", "handle ", "value\n", "returns ", "\n\n"};
    while (doc.size() < static_cast<std::size_t>(state.range(0))) doc += words[rng() % 7];
    const miti::ChunkingConfig config;
    for (auto _ : state) benchmark::DoNotOptimize(miti::chunk_text("doc", doc, config));
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(doc.size()));
}
BENCHMARK(BM_Chunk)->Arg(4000)->Arg(64000);

void BM_ScoreTask(benchmark::State& state) {
    const std::vector<std::string> out{"GetLogicalDriveStrings", "GetLogicalDrives", "QueryDosDevice",
                                       "NtQuerySystemInformation"};
    const std::vector<std::string> truth{"NtQuerySystemInformation", "GetLogicalDriveStrings", "QueryDosDevice"};
    for (auto _ : state) benchmark::DoNotOptimize(miti::score_task(out, truth));
}
BENCHMARK(BM_ScoreTask);

void BM_OptimalK(benchmark::State& state) {
    const auto index = make_index(2637, 768);
    const miti::DeterministicEmbedder embedder(768);
    const std::vector<std::string> truth{"fn10", "fn2000", "fn77"};
    for (auto _ : state) benchmark::DoNotOptimize(miti::optimal_k("enumerate drives", truth, index, embedder));
}
BENCHMARK(BM_OptimalK);

}  // namespace

BENCHMARK_MAIN();
