#pragma once
#include <ggmsel/errors.hpp>
#include <ggmsel/surrogates.hpp>
#include <ggmsel/scalar_prox.hpp>
#include <ggmsel/ggm_core.hpp>
#include <ggmsel/node_model.hpp>
#include <ggmsel/random.hpp>
#include <ggmsel/io.hpp>
#include <ggmsel/pipeline.hpp>
#include <ggmsel/config.hpp>
