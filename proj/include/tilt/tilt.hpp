#pragma once

#include "tilt/ablation.hpp"
#include "tilt/backend.hpp"
#include "tilt/config.hpp"
#include "tilt/corpus.hpp"
#include "tilt/evaluate.hpp"
#include "tilt/forge.hpp"
#include "tilt/http_backend.hpp"
#include "tilt/mock_backend.hpp"
#include "tilt/ranker.hpp"
#include "tilt/report.hpp"
#include "tilt/runner.hpp"
#include "tilt/simulator.hpp"
#include "tilt/tendency.hpp"
#include "tilt/version.hpp"
