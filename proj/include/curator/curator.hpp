#pragma once

#include "curator/corpus.hpp"
#include "curator/curation.hpp"
#include "curator/embedding.hpp"
#include "curator/errors.hpp"
#include "curator/fields.hpp"
#include "curator/finetune.hpp"
#include "curator/fixtures.hpp"
#include "curator/neural.hpp"
#include "curator/text.hpp"
#include "curator/vecindex.hpp"
