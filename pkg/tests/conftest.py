import pytest

from syllascore import synth


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """Two patients, four syllables, short recordings: enough for the plumbing."""
    root = tmp_path_factory.mktemp("small_corpus")
    spec = synth.SynthSpec(n_patients=2, syllables_per_set=4, duration_s=0.5, seed=5)
    manifest = synth.generate_corpus(spec, root)
    return spec, manifest, root
