from atba.cli import main

raise SystemExit(main())
