from collections import OrderedDict

import numpy as np


class EntrolimError(Exception):
    def __init__(self, msg):
        super().__init__(msg)
        self.msg = msg

    def __str__(self):
        return self.msg


class LimitedSizeDict(OrderedDict):
    '''OrderedDict that drops its oldest entries beyond size_limit.'''

    def __init__(self, *args, size_limit=None, **kwargs):
        self.size_limit = size_limit
        super().__init__(*args, **kwargs)
        self._trim()

    def __setitem__(self, key, value):
        super().__setitem__(key, value)
        self._trim()

    def _trim(self):
        while self.size_limit is not None and len(self) > self.size_limit:
            self.popitem(last=False)


class LRUCache(object):
    '''Least-recently-used mapping; missing keys read as None.'''

    def __init__(self, *args, **kwargs):
        self.cache = LimitedSizeDict(*args, **kwargs)

    def __getitem__(self, key):
        value = None
        if key in self.cache:
            value = self.cache.pop(key)
            self.cache[key] = value
        return value

    def __setitem__(self, key, value):
        self.cache.pop(key, None)
        self.cache[key] = value

    def __len__(self):
        return len(self.cache)


def derive_seed(master_seed, *key):
    '''Splittable counter: the same (master_seed, key) always gives the same
    child seed, independent of the order in which children are requested.'''
    words = [int(master_seed)] + [int(k) for k in key]
    return int(np.random.SeedSequence(words).generate_state(1, dtype=np.uint32)[0])


def rng_for(seed, *key):
    return np.random.default_rng(derive_seed(seed, *key) if key else int(seed))
