import copy


class Settings:
    """
    Base class for the validated settings objects of the engines.

    Subclasses declare:

    - default_settings: dict with every admitted key and its default value.
    - _validators: dict mapping each key to a callable raising ValueError on bad values.
    - _actuators (optional): dict mapping keys to callables normalising the value before storing it.

    Settings are read and written as attributes::

        settings = NoiseSettings(seed=3)
        settings.p_out = 0.1
        settings.configure({'scatter_var': 0.0})

    Setting an unknown key raises AttributeError, an invalid value raises ValueError.
    Cross-key constraints go in _check_consistency, which runs after every change.
    """
    default_settings = {}
    _validators = {}
    _actuators = {}

    def __init__(self, settings_dict=None, **kwargs):
        self._settings = copy.deepcopy(self.default_settings)
        self._configuring = True
        try:
            for key, value in {**(settings_dict or {}), **kwargs}.items():
                setattr(self, key, value)
        finally:
            self._configuring = False
        self._check_consistency()

    def __getattr__(self, name):
        if name.startswith('_'):
            raise AttributeError(name)
        settings = self.__dict__.get('_settings', {})
        if name in settings:
            return settings[name]
        # Try to get the attribute from the class
        return getattr(self.__class__, name)

    def __setattr__(self, name, value):
        if name.startswith('_'):
            super().__setattr__(name, value)
        elif name in self._settings:
            self._validators[name](value)
            actuator = self._actuators.get(name)
            self._settings[name] = actuator(value) if actuator is not None else value
            if not self._configuring:
                self._check_consistency()
        else:
            raise AttributeError(f"'{self.__class__.__name__}' object has no setting '{name}'")

    def _check_consistency(self):
        """Override to validate constraints involving more than one key."""
        pass

    def configure(self, settings_dict):
        """Configure settings using a dictionary."""
        self._configuring = True
        try:
            for key, value in settings_dict.items():
                setattr(self, key, value)
        finally:
            self._configuring = False
        self._check_consistency()
        return self

    def to_dict(self):
        """Return a dictionary representation of the settings."""
        return self._settings.copy()

    def __eq__(self, other):
        return type(self) is type(other) and self._settings == other._settings

    def __repr__(self):
        items = ", ".join(f"{k}={v!r}" for k, v in self._settings.items())
        return f"{self.__class__.__name__}({items})"

    def __deepcopy__(self, memo):
        new_settings = self.__class__.__new__(self.__class__)
        new_settings._configuring = False
        new_settings._settings = copy.deepcopy(self._settings, memo)
        return new_settings
