from rig_tuner.cli.cli import main

raise SystemExit(main())
