# handlers/__init__.py
# Komut modülleri: entropy_handler, merge_handler, experiment_handler
# Her modül bir `router` (CommandRouter) export eder; load_handlers bunları otomatik kaydeder
