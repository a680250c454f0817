#pragma once

#include "ldm/agent.hpp"
#include "ldm/env/experts.hpp"
#include "ldm/env/toyhouse.hpp"
#include "ldm/env/toyshop.hpp"
#include "ldm/explorer.hpp"
#include "ldm/formation.hpp"
#include "ldm/llm/gateway.hpp"
#include "ldm/llm/grammar.hpp"
#include "ldm/llm/http.hpp"
#include "ldm/llm/scripted.hpp"
#include "ldm/memory/batch_memory.hpp"
#include "ldm/memory/partition.hpp"
#include "ldm/memory/persistence.hpp"
#include "ldm/memory/trajectory_io.hpp"
#include "ldm/retrieval.hpp"
#include "ldm/pipeline.hpp"
