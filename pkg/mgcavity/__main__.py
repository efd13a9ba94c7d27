from mgcavity._harness import main

raise SystemExit(main())
