#pragma once

// Loads the six-policy mock fixture: bundle, corpus, index, truth and scripts.

#include <memory>
#include <string>
#include <vector>

#include "miti/corpus.hpp"
#include "miti/embedder.hpp"
#include "miti/evaluation.hpp"
#include "miti/llm_gateway.hpp"
#include "miti/pipeline.hpp"
#include "miti/policy.hpp"
#include "miti/retrieval.hpp"
#include "miti/util.hpp"
#include "testing.hpp"

namespace miti::testing {

struct E2eFixture {
    std::vector<MitigationPolicy> policies;
    Corpus corpus;
    ChunkingConfig chunking;
    DeterministicEmbedder embedder{64};
    VectorIndex index;
    GroundTruthDataset truth;
    MockScript llm1_script;
    MockScript llm2_script;

    E2eFixture() {
        const auto bundle = parse_stix_bundle(read_file(fixture("e2e/bundle.json")));
        policies = filter_automatable(extract_policies(bundle, "e2e/bundle.json").policies).kept;
        corpus = load_corpus(read_file(fixture("e2e/corpus.json")));
        index = index_build(chunk_corpus(corpus, chunking), embedder);
        truth = load_ground_truth(read_file(fixture("e2e/ground_truth.json")));
        llm1_script = mock_script_from_json(read_file(fixture("e2e/llm1_script.json")));
        llm2_script = mock_script_from_json(read_file(fixture("e2e/llm2_script.json")));
    }

    static LlmConfig mock_config(std::string model) {
        LlmConfig c;
        c.model_id = std::move(model);
        return c;
    }
};

}  // namespace miti::testing
