import importlib
from os import path, environ

import yaml
from marshmallow import ValidationError

from ibca.datamodel.serializers import run_config_marshmallow
from ibca.error_handlers import ConfigurationException

ROOT = path.join(path.dirname(path.abspath(__file__)), '..')
CONFIG = environ.get('IBCA_CONFIG', path.join(ROOT, 'conf/config.yaml'))
COMMANDS = path.join(ROOT, 'conf/commands.yaml')
LOGGING_CONF = path.join(ROOT, 'logging.conf')
PRESETS = {
    'desk': path.join(ROOT, 'conf/config.yaml'),
    'paper': path.join(ROOT, 'conf/paper.yaml'),
}
SECTIONS = ('model', 'train', 'data', 'output')

ibca_config = None
command_mapping = None


def get_ibca_config():
    global ibca_config
    if ibca_config is None:
        with open(CONFIG, 'r') as f:
            ibca_config = yaml.load(f, Loader=yaml.FullLoader)
    return ibca_config


def get_command_mapping():
    global command_mapping
    if command_mapping is None:
        with open(COMMANDS, 'r') as FH:
            command_mapping = yaml.load(FH, Loader=yaml.FullLoader)
    return command_mapping


def get_command_class(dotted):
    module_name, class_name = dotted.rsplit(".", 1)
    return getattr(importlib.import_module(module_name), class_name)


def read_config_file(config_path=None, preset=None):
    """
    Raw sectioned dict from a YAML file; a preset name picks a bundled file
    """
    if config_path is None:
        if preset is None:
            return _copy(get_ibca_config())
        if preset not in PRESETS:
            raise ConfigurationException(
                'preset: Must be one of: {}.'.format(', '.join(PRESETS)))
        config_path = PRESETS[preset]
    if not path.exists(config_path):
        raise ConfigurationException('config file {} does not exist'.format(config_path))
    with open(config_path, 'r') as f:
        return yaml.load(f, Loader=yaml.FullLoader) or {}


def apply_overrides(raw, overrides):
    """
    Apply ``key=value`` strings; ``key`` is ``section.field`` or a field name
    declared by exactly one section
    """
    for item in overrides or ():
        if '=' not in item:
            raise ConfigurationException('override "{}" is not of the form key=value'.format(item))
        key, text = item.split('=', 1)
        value = yaml.safe_load(text) if text else None
        if '.' in key:
            section, name = key.split('.', 1)
        else:
            section, name = _find_section(raw, key.strip()), key.strip()
        if section not in SECTIONS:
            raise ConfigurationException('override "{}": unknown section "{}"'.format(item, section))
        raw.setdefault(section, {})[name] = value
    return raw


def _find_section(raw, key):
    owners = [s for s in SECTIONS if key in (raw.get(s) or {})]
    if not owners:
        owners = [s for s in SECTIONS if key in _declared_fields(s)]
    if len(owners) != 1:
        raise ConfigurationException(
            'override key "{}" matches {} sections; use section.{}'.format(key, len(owners) or 'no', key))
    return owners[0]


def _declared_fields(section):
    return set(run_config_marshmallow.fields[section].schema.fields)


def load_run_config(config_path=None, overrides=None, preset=None):
    """
    Resolve a RunConfig from file, preset and overrides; IBCA_OUTPUT_ROOT
    replaces output.root
    """
    raw = read_config_file(config_path, preset)
    raw = apply_overrides(raw, overrides)
    if 'IBCA_OUTPUT_ROOT' in environ:
        raw.setdefault('output', {})['root'] = environ['IBCA_OUTPUT_ROOT']
    try:
        return run_config_marshmallow.load(raw)
    except ValidationError as err:
        raise ConfigurationException('invalid configuration: {}'.format(_flatten(err.messages)),
                                     debug=err.messages)


def _flatten(messages, prefix=''):
    parts = []
    for key, value in messages.items():
        name = '{}{}'.format(prefix, key)
        if isinstance(value, dict):
            parts.append(_flatten(value, name + '.'))
        else:
            parts.append('{}: {}'.format(name, ' '.join(str(v) for v in value)))
    return '; '.join(parts)


def _copy(raw):
    return yaml.safe_load(yaml.safe_dump(raw))
