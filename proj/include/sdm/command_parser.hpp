#pragma once

#include "sdm/command/grammar.hpp"
#include "sdm/command/llm.hpp"
#include "sdm/command/prompt.hpp"
#include "sdm/command/structured.hpp"
#include "sdm/command/corpus.hpp"
