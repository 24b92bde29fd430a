from simcal.cli import main

raise SystemExit(main())
