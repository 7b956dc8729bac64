import hypothesis

# numba-compiled paths can stall a first example while the cache loads
hypothesis.settings.register_profile("suite", deadline=None, max_examples=25)
hypothesis.settings.load_profile("suite")
